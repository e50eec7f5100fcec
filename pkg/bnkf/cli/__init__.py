from .config import *
from .commands import *
from .main import build_parser
