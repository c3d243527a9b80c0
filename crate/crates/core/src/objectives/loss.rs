use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};

use super::{EmbeddingBatch, Grads, LossValue, ObjectiveError, PositiveSets};
use crate::Scalar;

/// `S[i][j] = a_i . b_j / tau`.
pub fn sim_matrix<T: Scalar>(a: &Array2<T>, b: &Array2<T>, tau: T) -> Result<Array2<T>, ObjectiveError> {
    if !(tau.as_f64() > 0.0) {
        return Err(ObjectiveError::NonPositiveTemperature(tau.as_f64()));
    }
    if a.ncols() != b.ncols() {
        return Err(ObjectiveError::ShapeMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(ObjectiveError::NonFiniteInput("similarity operand"));
    }
    Ok(a.dot(&b.t()) / tau)
}

fn log_sum_exp<T: Scalar>(xs: impl Iterator<Item = T> + Clone) -> T {
    let m = xs.clone().fold(T::neg_infinity(), T::max);
    m + xs.map(|x| (x - m).exp()).sum::<T>().ln()
}

/// One contrastive direction: every anchor scores all candidates (plus its own extra
/// candidates) and is pulled towards its positive set.
struct Direction<T: Scalar> {
    value: T,
    d_anchor: Array2<T>,
    d_cand: Array2<T>,
    d_extra: Option<Vec<Array2<T>>>,
    /// d value / d logit for each anchor, candidates first then extras.
    d_logits: Vec<Array1<T>>,
}

fn direction<T: Scalar>(
    anchor: &Array2<T>,
    cand: &Array2<T>,
    extra: Option<&[Array2<T>]>,
    pos: Option<&PositiveSets>,
    tau: T,
) -> Result<Direction<T>, ObjectiveError> {
    let m = anchor.nrows();
    let n = cand.nrows();
    if let Some(p) = pos {
        if p.len() != m || m != n {
            return Err(ObjectiveError::ShapeMismatch(format!("{} positive sets for {m}x{n} scores", p.len())));
        }
    }
    let s = sim_matrix(anchor, cand, tau)?;
    let coef = T::one() / T::of(m as f64);
    let mut total = T::zero();
    let mut g = Array2::<T>::zeros((m, n));
    let mut d_logits = Vec::with_capacity(m);
    let mut d_extra = extra.map(|_| Vec::with_capacity(m));
    for i in 0..m {
        let mut logits: Array1<T> = s.row(i).to_owned();
        if let Some(ex) = extra {
            let e = ex[i].dot(&anchor.row(i)) / tau;
            logits = concatenate(Axis(0), &[logits.view(), e.view()]).expect("1-d concat");
        }
        let pset: &[usize] = match pos {
            Some(p) => p.get(i),
            None => std::slice::from_ref(&i),
        };
        let lse_all = log_sum_exp(logits.iter().copied());
        let lse_pos = log_sum_exp(pset.iter().map(|&k| logits[k]));
        total += lse_all - lse_pos;
        let mut dl: Array1<T> = logits.mapv(|x| (x - lse_all).exp() * coef);
        for &k in pset {
            dl[k] -= (logits[k] - lse_pos).exp() * coef;
        }
        g.row_mut(i).assign(&dl.slice(s![..n]));
        if let (Some(ex), Some(out)) = (extra, d_extra.as_mut()) {
            let de: ArrayView1<T> = dl.slice(s![n..]);
            let a = anchor.row(i);
            let mut block = Array2::<T>::zeros(ex[i].raw_dim());
            for (k, mut row) in block.rows_mut().into_iter().enumerate() {
                row.assign(&a.mapv(|x| x * de[k] / tau));
            }
            out.push(block);
        }
        d_logits.push(dl);
    }
    let mut d_anchor = g.dot(cand) / tau;
    if let Some(ex) = extra {
        for i in 0..m {
            let de = d_logits[i].slice(s![n..]);
            if !de.is_empty() {
                let add = ex[i].t().dot(&de) / tau;
                let mut row = d_anchor.row_mut(i);
                row += &add;
            }
        }
    }
    let d_cand = g.t().dot(anchor) / tau;
    Ok(Direction { value: total * coef, d_anchor, d_cand, d_extra, d_logits })
}

fn check_nonempty<T: Scalar>(batch: &EmbeddingBatch<T>) -> Result<(), ObjectiveError> {
    batch.validate()?;
    if batch.is_empty() {
        return Err(ObjectiveError::BatchTooSmall { have: 0, need: 1 });
    }
    Ok(())
}

fn v2t<T: Scalar>(batch: &EmbeddingBatch<T>, negs: bool) -> Result<LossValue<T>, ObjectiveError> {
    check_nonempty(batch)?;
    let extra = if negs { batch.neg_text.as_deref() } else { None };
    let d = direction(&batch.video, &batch.text, extra, None, batch.tau)?;
    let mut grads = Grads::zeros_like(batch);
    grads.video = d.d_anchor;
    grads.text = d.d_cand;
    if negs {
        if let Some(ne) = d.d_extra {
            grads.neg_text = Some(ne);
        }
    }
    Ok(LossValue { value: d.value, grads })
}

fn t2v<T: Scalar>(batch: &EmbeddingBatch<T>, pos: Option<&PositiveSets>) -> Result<LossValue<T>, ObjectiveError> {
    check_nonempty(batch)?;
    let d = direction(&batch.text, &batch.video, None, pos, batch.tau)?;
    let mut grads = Grads::zeros_like(batch);
    grads.text = d.d_anchor;
    grads.video = d.d_cand;
    Ok(LossValue { value: d.value, grads })
}

/// Video-to-text half of InfoNCE (row softmax, diagonal targets).
pub fn info_nce_v2t<T: Scalar>(batch: &EmbeddingBatch<T>) -> Result<LossValue<T>, ObjectiveError> {
    v2t(batch, false)
}

/// Text-to-video half of InfoNCE (column softmax, diagonal targets).
pub fn info_nce_t2v<T: Scalar>(batch: &EmbeddingBatch<T>) -> Result<LossValue<T>, ObjectiveError> {
    t2v(batch, None)
}

/// Symmetric InfoNCE over the plain batch. Augmented and negative blocks are ignored.
pub fn info_nce<T: Scalar>(batch: &EmbeddingBatch<T>) -> Result<LossValue<T>, ObjectiveError> {
    Ok(info_nce_v2t(batch)?.add(info_nce_t2v(batch)?))
}

/// EgoNCE over the joint batch `[main; aug]` with multi-positive sets indexed the same way.
pub fn ego_nce<T: Scalar>(batch: &EmbeddingBatch<T>, pos: &PositiveSets) -> Result<LossValue<T>, ObjectiveError> {
    check_nonempty(batch)?;
    let (Some(av), Some(at)) = (&batch.aug_video, &batch.aug_text) else {
        return Err(ObjectiveError::MissingAugBatch);
    };
    let b = batch.len();
    if pos.len() != 2 * b {
        return Err(ObjectiveError::ShapeMismatch(format!("{} positive sets for joint batch of {}", pos.len(), 2 * b)));
    }
    let jv = concatenate(Axis(0), &[batch.video.view(), av.view()]).expect("same width");
    let jt = concatenate(Axis(0), &[batch.text.view(), at.view()]).expect("same width");
    let fwd = direction(&jv, &jt, None, Some(pos), batch.tau)?;
    let bwd = direction(&jt, &jv, None, Some(pos), batch.tau)?;
    let gv = fwd.d_anchor + bwd.d_cand;
    let gt = fwd.d_cand + bwd.d_anchor;
    let mut grads = Grads::zeros_like(batch);
    grads.video = gv.slice(s![..b, ..]).to_owned();
    grads.aug_video = Some(gv.slice(s![b.., ..]).to_owned());
    grads.text = gt.slice(s![..b, ..]).to_owned();
    grads.aug_text = Some(gt.slice(s![b.., ..]).to_owned());
    Ok(LossValue { value: fwd.value + bwd.value, grads })
}

/// Video-to-text EgoNCE++: batch texts plus each row's hard negatives in the denominator.
/// A missing negative block is treated as all-empty.
pub fn egoncepp_v2t<T: Scalar>(batch: &EmbeddingBatch<T>) -> Result<LossValue<T>, ObjectiveError> {
    v2t(batch, true)
}

/// Per-row derivative of the video-to-text EgoNCE++ value with respect to each logit
/// `v_i . c / tau`, listing the batch texts first and then the row's negatives.
pub fn egoncepp_v2t_logit_grads<T: Scalar>(batch: &EmbeddingBatch<T>) -> Result<Vec<Array1<T>>, ObjectiveError> {
    check_nonempty(batch)?;
    Ok(direction(&batch.video, &batch.text, batch.neg_text.as_deref(), None, batch.tau)?.d_logits)
}

/// Text-to-video EgoNCE++: noun-sharing videos are all positives.
pub fn egoncepp_t2v<T: Scalar>(batch: &EmbeddingBatch<T>, pos: &PositiveSets) -> Result<LossValue<T>, ObjectiveError> {
    t2v(batch, Some(pos))
}

pub fn egoncepp_total<T: Scalar>(batch: &EmbeddingBatch<T>, pos: &PositiveSets) -> Result<LossValue<T>, ObjectiveError> {
    Ok(egoncepp_v2t(batch)?.add(egoncepp_t2v(batch, pos)?))
}
