import sys

from dmcis.cli import main

sys.exit(main())
