from mukit.cli import main
import sys

sys.exit(main())
