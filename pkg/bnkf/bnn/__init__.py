from .layers import *
from .features import *
from .model import *
from .optim import *
from .training import *
from .inference import *
from .artifact import *
