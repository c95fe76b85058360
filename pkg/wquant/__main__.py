#!/usr/bin/env python3
"""python -m wquant"""
import sys

from .cli import main

sys.exit(main())
