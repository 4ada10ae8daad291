import sys

from fluxgap.main import main

sys.exit(main())
