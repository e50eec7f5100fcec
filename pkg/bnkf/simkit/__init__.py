from .trajectory import *
from .measurements import *
from .dataset import *
from .io import *
