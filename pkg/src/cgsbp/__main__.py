import sys

from cgsbp.cli import main

sys.exit(main())
