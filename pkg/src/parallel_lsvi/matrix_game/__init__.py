from .solver import MatrixGame, GameSolution, solve, exploitability, DEFAULT_TOL, PLANNING_TOL
