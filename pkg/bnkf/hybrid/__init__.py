from .ensemble import *
from .estimators import *
