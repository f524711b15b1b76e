"""Forecasting, anomaly detection and contextual classification for household power data."""

from .anomaly import AnomalyConfig, AnomalyReport, detect, knn_scores, section_windows
from .context_tree import ContextSample, TreeNode, build_context_features, classify, gini, train_tree
from .evaluation import EvalReport, evaluate, mae, residuals, rmse
from .ingest import PowerRecord, UnivariateSeries, fill_missing, parse_dataset, resample
from .lstm import LstmConfig, LstmParams, TrainReport
from .preprocess import ScalerParams, WindowedDataset, fit_scaler, make_windows, split_train_test
from .svr import SvrConfig, SvrModel, predict_svr, rbf_kernel, train_svr

__version__ = "0.1.0"
