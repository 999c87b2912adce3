import sys

from geoleak.cli import main

sys.exit(main())
