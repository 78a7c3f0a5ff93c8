import sys

from deepdict.cli import main

sys.exit(main())
