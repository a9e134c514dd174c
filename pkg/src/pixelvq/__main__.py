import sys

from pixelvq.cli import main

sys.exit(main())
