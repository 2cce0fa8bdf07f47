import sys

from causalcite.cli import main

sys.exit(main())
