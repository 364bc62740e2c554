import sys

from rssvar.cli import main

sys.exit(main())
