APP_NAME = "rsenet"
VERSION = "0.1.0"

REGIONS = ("base", "middle", "apex")
REPORT_ROWS = ("base", "middle", "apex", "overall")

RAW_MAXVAL = 65535
MASK_MAXVAL = 255
MASK_FOREGROUND = 255

META_FILENAME = "meta.json"
SLICE_FILENAME = "slice_{index:03d}.pgm"
MASK_FILENAME = "mask_{index:03d}.pgm"
PROB_FILENAME = "prob_m{member}_{index:03d}.pgm"

# encoder output stride of each stage relative to the input
STAGE_STRIDES = (4, 8, 16, 32)
INPUT_MULTIPLE = 32

NORMALIZE_STD_FLOOR = 1e-8
PROBABILITY_FLOOR = 1e-7
DEFAULT_THRESHOLD = 0.5
PROBABILITY_SCALE = 65535

CHECKPOINT_MAGIC = b"RSECKPT\x00"
CHECKPOINT_VERSION = 1

WILCOXON_EXACT_MAX_N = 12

ENSEMBLE_SIZE = 3

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
