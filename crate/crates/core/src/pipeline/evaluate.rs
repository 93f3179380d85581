use ndarray::prelude::*;
use rayon::prelude::*;

use super::{Method, TrainedModel};
use crate::error::{Error, Result};
use crate::lle::{find_knn_of, lle_weights};
use crate::model::{argmax, labels_from_one_hot, Dataset, Hyperparameters, LinearClassifier};
use crate::solvers::{code_single_sample, SingleSampleProblem};

/// Predicted class of a code: the argmax of `W a`, lowest index on ties.
pub fn classify(w: &LinearClassifier, a: ArrayView1<f64>) -> usize {
    argmax(w.weights().dot(&a).view())
}

/// Majority vote among the `k_cls` training codes nearest to `query`.
/// Neighbour ties go to the lower sample index, vote ties to the lower class.
pub fn knn_surrogate_classify(
    a_train: ArrayView2<f64>,
    y_train: ArrayView2<f64>,
    query: ArrayView1<f64>,
    k_cls: usize,
) -> Result<usize> {
    if a_train.ncols() != y_train.ncols() {
        return Err(Error::invalid(
            "surrogate classifier: codes and labels disagree in count",
        ));
    }
    let labels = labels_from_one_hot(y_train);
    vote(a_train, &labels, y_train.nrows(), query, k_cls)
}

fn vote(
    a_train: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    query: ArrayView1<f64>,
    k_cls: usize,
) -> Result<usize> {
    let neighbors = find_knn_of(a_train, query, k_cls)?;
    let mut counts = vec![0usize; n_classes];
    for n in neighbors {
        counts[labels[n.index]] += 1;
    }
    let mut best = 0;
    for (class, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = class;
        }
    }
    Ok(best)
}

/// Codes unseen samples against a DG-DL model.
///
/// Each sample is first reconstructed from its `k` nearest training samples;
/// the same affine weights applied to their codes give a reference code
/// `ā`, and the sample is then coded with the extra penalty `β ||a - ā||²`.
#[derive(Debug)]
pub struct TestCoder<'a> {
    model: &'a TrainedModel,
    x_train: ArrayView2<'a, f64>,
    gram: Array2<f64>,
    hp: &'a Hyperparameters,
}

impl<'a> TestCoder<'a> {
    pub fn new(model: &'a TrainedModel, ds_train: &'a Dataset, hp: &'a Hyperparameters) -> Result<Self> {
        if model.method != Method::DgDl {
            return Err(Error::invalid(format!(
                "test-sample coding needs a DG-DL model, got {}",
                model.method
            )));
        }
        let x_train = ds_train.x_train();
        if model.codes.n_train() != x_train.ncols() {
            return Err(Error::invalid(format!(
                "model holds {} training codes but the dataset has {} labelled samples",
                model.codes.n_train(),
                x_train.ncols()
            )));
        }
        if hp.k > x_train.ncols() {
            return Err(Error::invalid(format!(
                "k = {} exceeds the {} training samples",
                hp.k,
                x_train.ncols()
            )));
        }
        let atoms = model.dictionary.atoms();
        Ok(Self {
            model,
            x_train,
            gram: atoms.t().dot(&atoms),
            hp,
        })
    }

    /// Reference code `ā = Σ_j w_j a_j` over the nearest training samples.
    pub fn reference_code(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let neighbors = find_knn_of(self.x_train, x, self.hp.k)?;
        let idx: Vec<usize> = neighbors.iter().map(|n| n.index).collect();
        let weights = lle_weights(x, self.x_train.select(Axis(1), &idx).view())?;
        let codes = self.model.codes.train();
        let mut reference = Array1::zeros(codes.nrows());
        for (&j, &wj) in idx.iter().zip(weights.iter()) {
            reference.scaled_add(wj, &codes.column(j));
        }
        Ok(reference)
    }

    pub fn code(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.x_train.nrows() {
            return Err(Error::invalid("test sample dimension mismatch"));
        }
        let reference = self.reference_code(x)?;
        let problem = SingleSampleProblem {
            dictionary: &self.model.dictionary,
            gram: self.gram.view(),
            x,
            reference: reference.view(),
            beta: self.hp.beta,
            lambda: self.hp.lambda,
        };
        Ok(code_single_sample(&problem, self.hp.sc_iters, self.hp.tol)?.0)
    }

    /// Codes every column of `x`, in parallel; column order is preserved.
    pub fn code_all(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let columns = (0..x.ncols())
            .into_par_iter()
            .map(|j| self.code(x.column(j)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Array2::zeros((self.model.codes.n_atoms(), x.ncols()));
        for (j, col) in columns.into_iter().enumerate() {
            out.column_mut(j).assign(&col);
        }
        Ok(out)
    }
}

/// Codes one unlabelled sample against a DG-DL model.
pub fn code_test_sample_dg_dl(
    x_test: ArrayView1<f64>,
    model: &TrainedModel,
    ds_train: &Dataset,
    hp: &Hyperparameters,
) -> Result<Array1<f64>> {
    TestCoder::new(model, ds_train, hp)?.code(x_test)
}

/// Codes of the unlabelled block of `ds`: read from the model for SS-DG-DL,
/// computed sample by sample for DG-DL.
pub fn test_codes(model: &TrainedModel, ds: &Dataset, hp: &Hyperparameters) -> Result<Array2<f64>> {
    match model.method {
        Method::SsDgDl => {
            if model.codes.n_samples() != ds.n_samples() || model.codes.n_train() != ds.n_train() {
                return Err(Error::invalid(
                    "SS-DG-DL model codes do not match the dataset's sample split",
                ));
            }
            Ok(model.codes.test().to_owned())
        }
        Method::DgDl => TestCoder::new(model, ds, hp)?.code_all(ds.x_test()),
    }
}

/// Accuracies and confusion matrices (rows: true class, columns: predicted).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Test accuracy of the k-NN vote on codes.
    pub surrogate_test_accuracy: f64,
    pub train_confusion: Array2<usize>,
    pub test_confusion: Array2<usize>,
}

fn confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Array2<usize> {
    let mut m = Array2::zeros((n_classes, n_classes));
    for (&t, &p) in truth.iter().zip(predicted) {
        m[[t, p]] += 1;
    }
    m
}

/// Fraction on the diagonal; 0 for an empty matrix.
pub(crate) fn accuracy(confusion: &Array2<usize>) -> f64 {
    let total: usize = confusion.sum();
    if total == 0 {
        0.0
    } else {
        confusion.diag().sum() as f64 / total as f64
    }
}

/// Classifies the labelled and unlabelled blocks of `ds` with the learned
/// linear classifier, and the unlabelled block with the k-NN vote.
pub fn evaluate(model: &TrainedModel, ds: &Dataset, hp: &Hyperparameters) -> Result<EvalReport> {
    let codes = test_codes(model, ds, hp)?;
    evaluate_codes(model, ds, codes.view(), hp.k_cls)
}

/// [`evaluate`] with the unlabelled codes supplied by the caller.
pub fn evaluate_codes(model: &TrainedModel, ds: &Dataset, codes: ArrayView2<f64>, k_cls: usize) -> Result<EvalReport> {
    let test_truth = ds
        .test_labels()
        .ok_or_else(|| Error::invalid("evaluation needs ground-truth labels for the unlabelled block"))?;
    let c = ds.n_classes();
    if model.classifier.n_classes() != c {
        return Err(Error::invalid("classifier and dataset disagree on the class count"));
    }
    let train_truth = ds.train_labels();
    let train_codes = model.codes.train();
    if train_codes.ncols() != train_truth.len() {
        return Err(Error::invalid("model and dataset disagree on the labelled block size"));
    }
    let train_pred: Vec<usize> = train_codes
        .columns()
        .into_iter()
        .map(|a| classify(&model.classifier, a))
        .collect();

    if codes.ncols() != test_truth.len() || codes.nrows() != model.codes.n_atoms() {
        return Err(Error::invalid("test codes do not match the unlabelled block"));
    }
    let test_pred: Vec<usize> = codes
        .columns()
        .into_iter()
        .map(|a| classify(&model.classifier, a))
        .collect();
    let k_cls = k_cls.min(train_codes.ncols());
    let surrogate_pred = (0..codes.ncols())
        .into_par_iter()
        .map(|j| vote(train_codes, &train_truth, c, codes.column(j), k_cls))
        .collect::<Result<Vec<_>>>()?;

    let train_confusion = confusion(&train_truth, &train_pred, c);
    let test_confusion = confusion(test_truth, &test_pred, c);
    let surrogate = confusion(test_truth, &surrogate_pred, c);
    Ok(EvalReport {
        train_accuracy: accuracy(&train_confusion),
        test_accuracy: accuracy(&test_confusion),
        surrogate_test_accuracy: accuracy(&surrogate),
        train_confusion,
        test_confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_picks_basis_direction() {
        let w = LinearClassifier::new(Array2::eye(3)).unwrap();
        assert_eq!(classify(&w, array![0.0, 0.0, 1.0].view()), 2);
    }

    #[test]
    fn classify_ties_go_to_class_zero() {
        let w = LinearClassifier::new(array![[1.0, 1.0], [2.0, 0.0]]).unwrap();
        assert_eq!(classify(&w, array![1.0, 1.0].view()), 0);
    }

    #[test]
    fn surrogate_recovers_training_code_with_one_neighbour() {
        let a = array![[0.0, 1.0, 5.0], [0.0, 1.0, 5.0]];
        let y = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let got = knn_surrogate_classify(a.view(), y.view(), array![1.0, 1.0].view(), 1).unwrap();
        assert_eq!(got, 1);
    }

    #[test]
    fn surrogate_with_all_neighbours_returns_global_majority() {
        let a = array![[0.0, 1.0, 2.0, 3.0]];
        let y = array![[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]];
        let got = knn_surrogate_classify(a.view(), y.view(), array![3.0].view(), 4).unwrap();
        assert_eq!(got, 0);
        assert!(knn_surrogate_classify(a.view(), y.view(), array![3.0].view(), 5).is_err());
    }

    #[test]
    fn accuracy_from_confusion() {
        let m = confusion(&[0, 1, 1, 2], &[0, 1, 0, 2], 3);
        assert_eq!(m.sum(), 4);
        assert_eq!(accuracy(&m), 0.75);
        assert_eq!(accuracy(&Array2::zeros((2, 2))), 0.0);
    }
}
