import sys

from overlapcomm.cli import main

sys.exit(main())
