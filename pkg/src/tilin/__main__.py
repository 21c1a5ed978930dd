"""Allow ``python -m tilin`` as an alias for the ``tilin`` console script."""

from tilin.cli import entry

if __name__ == "__main__":
    entry()
