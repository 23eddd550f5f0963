import sys

from mistguard.cli import main

sys.exit(main())
