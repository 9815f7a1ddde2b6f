import sys

from shrinklab.cli import main

sys.exit(main())
