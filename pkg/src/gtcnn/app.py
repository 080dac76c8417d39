"""Console entry point."""

import sys


def main() -> None:
    """Run the command line."""
    if len(sys.argv) > 1 and sys.argv[1] == "version":
        from importlib.metadata import version

        print(f"gtcnn {version('gtcnn')}")
        return

    from gtcnn.cli import create_parser, run_cli

    result = run_cli()
    if result is not None:
        sys.exit(result)

    # No command given
    create_parser().print_help(sys.stderr)
    sys.exit(2)


if __name__ == "__main__":
    main()
