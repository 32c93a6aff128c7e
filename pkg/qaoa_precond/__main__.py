import sys

from qaoa_precond.cli import main

if __name__ == '__main__':
    sys.exit(main())
