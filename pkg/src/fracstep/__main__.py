from __future__ import annotations

import sys

from fracstep.cli import main

sys.exit(main())
