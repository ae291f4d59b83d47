from pmc._version import __version__
from pmc.synthdata import generate_benchmark
from pmc.trainers import train_pmc, train_pmc_pi
from pmc.run_experiment import run_experiment
