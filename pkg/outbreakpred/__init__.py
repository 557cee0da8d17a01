import configparser
import os
import pathlib

__version__ = "0.3.0"
version = __version__

#### Create a configuration file for outbreakpred if it doesn't exist.
def create_config_dir():
    """
    Checks if the default .outbreakpred directory exists, and if not, it sets it up
    """
    homedir = pathlib.Path.home()
    config_folder = os.path.join(homedir, ".outbreakpred")

    # make folder if doesn't exist
    if not os.path.isdir(config_folder):
        os.mkdir(config_folder)

    # make default embedding cache folder if it doesn't exist
    default_cache_dir = os.path.join(config_folder, "embedding_cache")
    if not os.path.exists(default_cache_dir):
        os.mkdir(default_cache_dir)

    # write config if it doesn't exist
    config_filepath = os.path.join(config_folder, "outbreakpred.cfg")
    if not os.path.exists(config_filepath):
        config = configparser.ConfigParser()
        config["PATH"] = {}
        config["PATH"]["modeldb"] = os.path.join(config_folder, "outbreakpred_modeldb.csv") # location to store the checkpoint index
        config["PATH"]["embedding_cache"] = default_cache_dir
        config["SIM"] = {}
        config["SIM"]["mu"] = "0.1"
        config["SIM"]["max_steps"] = "1000"
        config["SIM"]["n_workers"] = "1"
        config["TRAIN"] = {}
        config["TRAIN"]["learning_rate"] = "0.001"
        config["TRAIN"]["batch_size"] = "64"
        config["TRAIN"]["max_epochs"] = "100"
        config["TRAIN"]["patience"] = "10"
        config["GRAPHWAVE"] = {}
        config["GRAPHWAVE"]["cache_embeddings"] = "True"
        config["GRAPHWAVE"]["dense_limit"] = "500"
        config["LOG"] = {}
        config["LOG"]["verbose"] = "True"

        with open(config_filepath, 'w') as f:
            config.write(f)

        print("outbreakpred: Configuration file written to {0}. Please edit if you want things stored in different locations.".format(config_filepath))
create_config_dir()

_bool_map = {"true" : True, "false" : False}

# load in default settings based on configuration file
config_filepath = os.path.join(pathlib.Path.home(), ".outbreakpred", "outbreakpred.cfg")
config = configparser.ConfigParser()
config.read(config_filepath)

## pipeline settings
modeldb_filepath = config.get("PATH", "modeldb", fallback=None) # path to the checkpoint index
embedding_cache_dir = config.get("PATH", "embedding_cache", fallback=None) # path to GraphWave cache files
default_mu = config.getfloat("SIM", "mu", fallback=0.1) # per-step recovery probability
default_max_steps = config.getint("SIM", "max_steps", fallback=1000) # hard cap on simulated steps
n_workers = config.getint("SIM", "n_workers", fallback=1) # processes used for batch simulation and sweeps
learning_rate = config.getfloat("TRAIN", "learning_rate", fallback=1e-3)
batch_size = config.getint("TRAIN", "batch_size", fallback=64)
max_epochs = config.getint("TRAIN", "max_epochs", fallback=100)
patience = config.getint("TRAIN", "patience", fallback=10) # early stopping patience on validation AUC
cache_embeddings = _bool_map[config.get("GRAPHWAVE", "cache_embeddings", fallback='true').lower()] # reuse embeddings across runs?
dense_limit = config.getint("GRAPHWAVE", "dense_limit", fallback=500) # largest graph for exact dense wavelets
verbose = _bool_map[config.get("LOG", "verbose", fallback='true').lower()] # print progress lines?

format_version = 1 # version stamped into every output file


def log(message):
    """
    Prints a progress line if the verbose setting is turned on

    Args:
        message (str): line to print
    """
    if verbose:
        print("outbreakpred: {0}".format(message))
