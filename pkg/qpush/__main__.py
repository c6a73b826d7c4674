import sys

from qpush.cli import main

sys.exit(main())
