"""Granular semantic imputation and a bankruptcy-prediction pipeline."""

from .data_model import (CategoryMap, DataError, MaskMatrix, StandardizationParams, Table,
                         build_mask, encode_categoricals, from_matrix, inverse_standardize,
                         load_path, load_table, standardize)
from .granular_imputer import ImputedTable, LocalModel, fit_local, impute_cell, impute_table
from .granule import Granule, GranuleSpec, GranuleUnderfull, form_granule, select_rows
from .semantics import CorrelationMatrix, SemanticFeatureSet, correlation_matrix, semantic_features

__version__ = "0.1.0"
