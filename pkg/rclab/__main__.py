from __future__ import annotations

import sys

from rclab.cli import run


def main() -> None:
    try:
        code = run(sys.argv[1:])
    except KeyboardInterrupt:
        print()
        sys.exit(130)
    sys.exit(code)


if __name__ == "__main__":
    main()
