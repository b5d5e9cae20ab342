import sys

from ribcage_seg.main import main

sys.exit(main())
