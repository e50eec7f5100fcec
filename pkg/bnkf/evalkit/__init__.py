from .metrics import *
from .benchmark import *
from .timing import *
from .report import *
from .checks import *
