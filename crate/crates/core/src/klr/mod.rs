//! Kernel logistic regression, binary and multinomial, trained by gradient
//! descent on cross-entropy plus a weighted boundary-robustness penalty.

pub mod domain;
pub mod model;
pub mod train;

pub use domain::{gram_matrix, Discretization, TopoDomain};
pub use model::{gaussian_kernel, kernel_vector, shifted_sigmoid, sigmoid, KernelModel, Link};
pub use train::{
    data_loss_grad, data_loss_grad_multi, evaluate, predict_labels, psi_fields, topo_loss_grad,
    topo_loss_grad_multi, train_binary, train_multilabel, IterRecord, PsiFields, TrainConfig,
    TrainOutcome, Trainer,
};
