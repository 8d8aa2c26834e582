from dataclasses import dataclass


@dataclass
class Defaults:
    _instance = None

    def __new__(cls, *args, **kwargs):
        """This class method ensures that only one instance of the class exists"""
        if cls._instance is None:
            cls._instance = super(Defaults, cls).__new__(cls)
        return cls._instance

    # clock
    DT_MS = 0.5

    # network
    N_INPUT = 784
    IMAGE_SIDE = 28
    N_CLASSES = 10
    N_EXC = 100
    W_MAX = 1.0
    INIT_WEIGHT_FRACTION = 0.3
    W_INH = 100.0
    W_EXC_TO_INH = 500.0

    # excitatory LIF
    EXC_V_REST = -65.0
    EXC_V_RESET = -65.0
    EXC_V_THRESH = -52.0
    EXC_TAU_MEM = 100.0
    EXC_REFRACTORY = 5.0
    EXC_TAU_POST_CURRENT = 5.0
    EXC_R_MEM = 2.0

    # inhibitory LIF
    INH_V_REST = -60.0
    INH_V_RESET = -45.0
    INH_V_THRESH = -40.0
    INH_TAU_MEM = 10.0
    INH_REFRACTORY = 2.0
    INH_TAU_POST_CURRENT = 1.0
    INH_R_MEM = 1.0

    # homeostasis
    THETA_PLUS = 0.05
    TAU_THETA = 1e7
    THETA_EXPONENT_CAP = 64.0

    # presentation protocol
    PRESENTATION_MS = 350.0
    REST_MS = 150.0
    MIN_SPIKES = 5
    RATE_BOOST_HZ = 32.0
    MAX_RETRIES = 8
    INTENSITY_SCALE = 0.25

    # plasticity
    TAU_REC = 4.0
    TAU_ACC = 40.0
    TAU_POST_TRACE = 80.0
    OFFSET = 0.2
    K_CONST = 0.01
    K1_CONST = 0.01
    K2_CONST = 1e2
    ALPHA_STRONG = 0.01
    ALPHA_WEAK = 0.0001
    ALPHA_PRESET = "weak_decay"
    ALPHA_LIN = 0.01
    THETA_NORM = 1.0

    # isolated decay
    TAU_LEAK_ISO = 200.0
    ALPHA_ISO = 0.01
    TAU_TRACE_ISO = 20.0

    # power-law STDP baseline
    ETA_STDP = 0.01
    MU_STDP = 1.0

    # noise
    AWGN_SNR_DB = 9.5
    COMBINED_SNR_DB = 12.0
    CONTRAST_FACTOR = 0.5
    NOISE_VARIANCE_FLOOR = 1e-3

    # schedules and splits
    DECREASING_BASE = 900
    DECREASING_STEP = -50
    PER_CLASS_COUNT = 500
    LABEL_COUNT = 1000
    TEST_COUNT = 1000
    SNAPSHOT_EVERY = 500
    BACKGROUND_FRACTION = 0.95

    # dataset download
    MNIST_BASE_URL = "https://ossci-datasets.s3.amazonaws.com/mnist/"
    MNIST_FILES = (
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    )
    DEFAULT_REQ_TIMEOUT = 60

    # backoff-retry
    DEFAULT_MAX_RETRIES = 3
    DEFAULT_MAX_TIME = 90

    THREADS_ENV_VAR = "ASP_SNN_THREADS"
