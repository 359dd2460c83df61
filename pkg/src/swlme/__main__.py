import sys

from swlme.cli import main

sys.exit(main())
