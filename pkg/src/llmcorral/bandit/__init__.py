from .model import SpannerGreedy, bilinear_predict, squared_loss_grad
from .reduction import ActionEmbeddingReducer, top_right_singular_vectors
from .spanner import SpannerSet, compute_spanner, spanner_coefficients
