#!/usr/bin/env python3
"""
Uncertain Evaluation Analyzer - Main Entry Point
Recommender-system metrics as distributions under human rating uncertainty

Exit status: 0 success, 1 usage error, 2 data/validation error, 130 interrupted.
"""

import sys
import traceback

from environment import preflight_checks

preflight_checks()

import analysis  # noqa: E402
from cli import UsageError, parse_args, print_startup_banner, setup_logging  # noqa: E402
from models import ValidationError  # noqa: E402

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERRUPTED = 130


def main(argv=None) -> int:
    """Main entry point for Uncertain Evaluation Analyzer."""
    try:
        subcommand, cfg, args = parse_args(argv)
        setup_logging(args.verbose, args.quiet)
        analysis.QUIET = args.quiet
        if not args.quiet:
            print_startup_banner()

        analysis.run(subcommand, cfg)
        analysis.say("✅ Analysis complete.")
        return EXIT_OK

    except UsageError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"❌ Invalid input: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"❌ Cannot read or write {e.filename or 'file'}: {e.strerror or e}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        print("\n\n⚠️  Interrupted by user. Shutting down...", file=sys.stderr)
        return EXIT_INTERRUPTED
    except Exception as e:
        print(f"\n❌ Fatal error: {e}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
