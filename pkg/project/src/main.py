"""
Run the `codednfv` command line without installing the package:

    python project/src/main.py sweep --config project/configs/three_servers.toml
"""

from codednfv.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
