"""Bus departure scheduling that maximises passengers served within a waiting threshold."""
from .baselines import OracleLimitError, brute_force_opt, fix_interval, top_k
from .greedy import greedy_solve
from .index import ServeIndex
from .io import GeneratorConfig, generate_candidates, generate_instance, load_instance, save_instance
from .model import (BusCandidate, ContractError, Frequency, InfeasibleQuotaError, Instance,
                    InstanceError, Passenger, Route, coverage, objective, serve_indicator)
from .partition import bus_route_partitioning, overlap_ratio, passenger_pool
from .propart import part_greedy_solve, pro_greedy_solve, pro_part_greedy_solve

__version__ = "0.1.0"
