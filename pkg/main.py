#!/usr/bin/env python3
"""
Main entry point for the pseudo labeler (same as the ``pseudo-labeler`` script)
"""
import sys

from pseudo_labeler.cli import main

if __name__ == '__main__':
    sys.exit(main())
