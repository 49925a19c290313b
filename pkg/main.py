#!/usr/bin/env python3
"""
noetherkit - Main Entry Point
Verification toolkit for non-autonomous Lagrangian and Hamiltonian mechanics
"""
import sys
from pathlib import Path

# Add src directory to Python path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))


def main():
    """Main function"""
    from cli import main as cli_main
    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
