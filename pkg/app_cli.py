#!/usr/bin/env python3
"""
wquant 实验入口
命令行驱动的测度量化实验与验收套件
"""
import sys

from wquant.cli import main

if __name__ == "__main__":
    sys.exit(main())
