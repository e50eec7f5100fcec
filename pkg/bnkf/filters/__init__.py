from .motion import *
from .ekf import *
from .ukf import *
from .correction import *
from .track import *
