from .types import *
from .covariance import *
from .transforms import *
from .converted import *
