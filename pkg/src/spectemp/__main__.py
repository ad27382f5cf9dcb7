import sys

from spectemp.cli import main

sys.exit(main())
