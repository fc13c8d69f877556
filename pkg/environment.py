#!/usr/bin/env python3
"""
Environment and preflight checks for Uncertain Evaluation Analyzer.
"""

import os
import sys
from dotenv import load_dotenv

# Resolve .env relative to this file (same dir as main.py)
CURRENT_DIR = os.path.dirname(os.path.abspath(__file__))
ENV_PATH = os.path.join(CURRENT_DIR, ".env")

# Load environment variables eagerly so config defaults see them
load_dotenv(dotenv_path=ENV_PATH)


def preflight_checks() -> None:
    """Check required numerical modules; a missing .env is fine (defaults apply)."""
    try:
        import numpy  # noqa: F401
        import scipy  # noqa: F401
    except ImportError as e:
        print(f"❌ Missing required module: {e}", file=sys.stderr)
        print("Run: pip install -r requirements.txt", file=sys.stderr)
        sys.exit(1)
