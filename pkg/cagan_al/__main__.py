# SPDX-License-Identifier: LGPL-3.0-or-later
# SPDX-FileNotice: Part of the cagan-active-learning project.

"""Allow ``python -m cagan_al``."""

import sys

from .entrypoints.cli import main

sys.exit(main())
