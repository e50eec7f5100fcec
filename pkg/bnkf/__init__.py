from .errors import *
from .seeding import *
from .geom import *
from .filters import *
from .bnn import *
from .hybrid import *
from .simkit import *
from .evalkit import *

__version__ = "1.0.0"
