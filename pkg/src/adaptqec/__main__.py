import sys

from adaptqec.cli import main

sys.exit(main())
