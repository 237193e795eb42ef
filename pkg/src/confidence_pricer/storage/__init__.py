from .base import ResultSink
from .csv_store import CsvSink, format_value
