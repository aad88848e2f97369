import logging
from pathlib import Path

PACKAGE_ROOT = Path(__file__).resolve().parent
ASSETS_DIR = PACKAGE_ROOT / 'assets'
BROWNIAN_CONFIG = ASSETS_DIR / 'brownian.cfg'
CRAMER_LUNDBERG_CONFIG = ASSETS_DIR / 'cramer_lundberg.cfg'
JUMP_DIFFUSION_CONFIG = ASSETS_DIR / 'jump_diffusion.cfg'

logging.getLogger(__name__).addHandler(logging.NullHandler())
