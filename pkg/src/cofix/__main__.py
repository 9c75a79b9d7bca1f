import sys

from cofix.cli import main

sys.exit(main())
