from .desk import PricingDesk, TABLES
