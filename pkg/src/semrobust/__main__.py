"""Allow running the package with ``python -m semrobust``."""

from semrobust.cli.main import main

if __name__ == "__main__":
    main()
