"""
Main entry point for the restriction laboratory.
"""
import logging
import sys

from cli.commands import run_command

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def main():
    """
    Main function of the application.
    """
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, stream=sys.stderr)
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
