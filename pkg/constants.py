#!/usr/bin/env python3
# 常量定义模块 - 存储项目中使用的数值阈值和默认参数

# 精确零结构（行随机性、CᵀD=0）的绝对容差
EXACT_ZERO_TOL: float = 1e-12

# 正定/半正定判定的最小特征值阈值（相对 max(1, ‖M‖)）
PD_THRESHOLD: float = 1e-10

# Ξ 对称性检查容差
SYMMETRY_TOL: float = 1e-9

# 线性求解条件数上限，超过视为病态
CONDITION_LIMIT: float = 1e12

# 无限时域不动点迭代
FIXED_POINT_TOL: float = 1e-9
FIXED_POINT_MAX_ITER: int = 10_000
DIVERGENCE_BOUND: float = 1e12

# γ_c 二分搜索
GAMMA_SEARCH_LO: float = 1e-3
GAMMA_SEARCH_HI: float = 10.0
GAMMA_SEARCH_HI_MAX: float = 1e4
GAMMA_SEARCH_TOL: float = 1e-3
GAMMA_SEARCH_HORIZON_CAP: int = 3000

# 可观测性秩判定的相对奇异值阈值
RANK_TOL: float = 1e-10

# 信道数上限（2^m 个结果稠密枚举）
MAX_CHANNELS: int = 16

# 暴力参考解
ORACLE_GRID_LOWER: float = -10.0
ORACLE_GRID_UPPER: float = 10.0
ORACLE_GRID_STEP: float = 1e-3
ORACLE_MAX_GRID_POINTS: int = 10**8
ORACLE_MAX_LEAVES: int = 10**5

# 蒙特卡洛仿真
SIM_STEPS: int = 60
SIM_TRIALS: int = 1000
SIM_SEED: int = 0
INPUT_POLICIES: tuple = ("zero", "hold")

# 场景文件
SCENARIO_FORMAT_VERSION: int = 1
SCENARIO_COMMANDS: tuple = ("check", "solve", "gamma-c", "sweep", "simulate")
CHANNEL_FIELDS: tuple = ("stay_good", "recover")

# CSV 输出有效数字
CSV_SIGNIFICANT_DIGITS: int = 17

# 退出码
EXIT_OK: int = 0
EXIT_INPUT_ERROR: int = 1
EXIT_ANALYTIC_FAILURE: int = 2

# (i, j) 网格单元数达到该值才启用线程池
PARALLEL_GRID_MIN_CELLS: int = 64

# 日志文件
LOG_RETENTION_DAYS: int = 7
LOG_MAX_BYTES: int = 10 * 1024 * 1024
LOG_BACKUP_COUNT: int = 7
