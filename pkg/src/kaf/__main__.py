import sys

from kaf.cli import main

sys.exit(main())
