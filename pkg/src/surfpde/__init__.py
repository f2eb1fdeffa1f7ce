"""surfpde: PDE solving on curved surfaces with sine-activated networks."""

from .field import SirenNet, init_siren, load_net, save_net

__version__ = "0.1.0"

__all__ = ["SirenNet", "init_siren", "save_net", "load_net", "__version__"]
