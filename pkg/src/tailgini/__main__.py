import sys

from tailgini.cli import main

sys.exit(main())
