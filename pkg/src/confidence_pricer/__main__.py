from __future__ import annotations

from .cli import cli


def main() -> None:
    # python -m confidence_pricer <command>
    cli(prog_name="confidence-pricer")


if __name__ == "__main__":
    main()
