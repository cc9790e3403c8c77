//! Macro-cell link budget: log-distance path loss with log-normal shadowing,
//! Shannon capacity per UE, and the per-slot rate matrix R.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::RateMatrix;
use crate::error::{Error, Result};
use crate::geometry::{DistrictLayout, UePlacement};

/// Path-loss model is not meaningful inside this distance; links are clamped.
pub const MIN_LINK_DISTANCE_KM: f64 = 0.01;

const LN10_OVER_10: f64 = std::f64::consts::LN_10 / 10.0;

/// How UEs, eNodeBs and transmit power combine into R(i,k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateModel {
    /// Every UE lies under the coverage of every eNodeB and is served on its
    /// own 5 MHz channel at full transmit power by each eNodeB granted to its
    /// operator: R(i,k) sums the capacity of all of operator i's UEs from k.
    #[default]
    Coverage,
    /// Each UE is attached to its nearest eNodeB, which splits its transmit
    /// power equally among the UEs it serves: R(i,k) sums the capacity of
    /// operator i's UEs attached to k.
    Associated,
}

impl RateModel {
    pub fn name(&self) -> &'static str {
        match self {
            RateModel::Coverage => "coverage",
            RateModel::Associated => "associated",
        }
    }
}

impl FromStr for RateModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "coverage" => Ok(RateModel::Coverage),
            "associated" => Ok(RateModel::Associated),
            other => Err(format!(
                "unknown rate model '{other}' (expected coverage or associated)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Informational only; the path-loss constants assume 2 GHz.
    pub carrier_ghz: f64,
    pub bandwidth_per_ue_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub shadow_sigma_db: f64,
    pub rate_model: RateModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 2.0,
            bandwidth_per_ue_hz: 5.0e6,
            tx_power_dbm: 46.0,
            noise_psd_dbm_hz: -179.0,
            shadow_sigma_db: 8.0,
            rate_model: RateModel::Coverage,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_per_ue_hz.is_finite() && self.bandwidth_per_ue_hz > 0.0) {
            return Err(Error::Channel(format!(
                "bandwidth {} Hz must be positive",
                self.bandwidth_per_ue_hz
            )));
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(Error::Channel(format!(
                "shadowing sigma {} dB must be non-negative",
                self.shadow_sigma_db
            )));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::Channel("transmit power and noise PSD must be finite".into()));
        }
        Ok(())
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_w(self.tx_power_dbm)
    }

    pub fn noise_psd_w_hz(&self) -> f64 {
        dbm_to_w(self.noise_psd_dbm_hz)
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Loss in dB: 128 + 37.6·log10(d_km) + ψ.
pub fn path_loss_db(d_km: f64, shadow_db: f64) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::Channel(format!("link distance {d_km} km must be positive")));
    }
    Ok(128.0 + 37.6 * d_km.log10() + shadow_db)
}

/// Zero-mean Gaussian shadowing sample in dB.
pub fn draw_shadowing<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma_db * z
}

/// Shannon capacity B·log2(1 + P·g / (N0·B)) in bit/s.
pub fn shannon_rate(bandwidth_hz: f64, tx_power_w: f64, gain_linear: f64, noise_psd_w_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::Channel(format!("bandwidth {bandwidth_hz} Hz must be positive")));
    }
    if !(noise_psd_w_hz > 0.0) {
        return Err(Error::Channel(format!(
            "noise PSD {noise_psd_w_hz} W/Hz must be positive"
        )));
    }
    if !(tx_power_w >= 0.0) || !(gain_linear >= 0.0) {
        return Err(Error::Channel("transmit power and gain must be non-negative".into()));
    }
    Ok(capacity(
        bandwidth_hz,
        tx_power_w * gain_linear / (noise_psd_w_hz * bandwidth_hz),
    ))
}

#[inline]
fn capacity(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * (1.0 + snr).log2()
}

/// Shadowing realization ψ for every UE–site pair, UE-major in the
/// operator-major UE order of [`UePlacement::iter`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingField {
    n_ues: usize,
    n_sites: usize,
    values_db: Vec<f64>,
}

impl ShadowingField {
    pub fn zeros(n_ues: usize, n_sites: usize) -> Self {
        Self {
            n_ues,
            n_sites,
            values_db: vec![0.0; n_ues * n_sites],
        }
    }

    pub fn from_values(n_ues: usize, n_sites: usize, values_db: Vec<f64>) -> Result<Self> {
        if values_db.len() != n_ues * n_sites {
            return Err(Error::Dimension(format!(
                "shadowing field has {} values, expected {n_ues}x{n_sites}",
                values_db.len()
            )));
        }
        Ok(Self {
            n_ues,
            n_sites,
            values_db,
        })
    }

    /// Independent draw for every pair, UE-major.
    pub fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R, sigma_db: f64) {
        for v in &mut self.values_db {
            *v = draw_shadowing(rng, sigma_db);
        }
    }

    #[inline]
    pub fn get(&self, ue: usize, site: usize) -> f64 {
        self.values_db[ue * self.n_sites + site]
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
}

/// Shadowing-free part of every link, precomputed once per replication so
/// the per-slot work is one exp and one log per UE–site pair.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    model: RateModel,
    n_mos: usize,
    n_sites: usize,
    bandwidth_hz: f64,
    ue_mo: Vec<usize>,
    ue_site: Vec<usize>,
    /// Mean SNR (no shadowing) per pair, UE-major. Under the associated
    /// model it already includes the serving site's power split.
    mean_snr: Vec<f64>,
}

impl LinkBudget {
    pub fn new(layout: &DistrictLayout, placement: &UePlacement, params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        let n_sites = layout.n_sites();
        let n_mos = placement.positions.len();
        let noise = params.noise_psd_w_hz() * params.bandwidth_per_ue_hz;
        let power = params.tx_power_w();

        let mut served = vec![0usize; n_sites];
        for (_, _, k) in placement.iter() {
            if k >= n_sites {
                return Err(Error::Dimension(format!(
                    "UE attached to eNodeB index {k} of {n_sites}"
                )));
            }
            served[k] += 1;
        }

        let mut ue_mo = Vec::with_capacity(placement.n_ues());
        let mut ue_site = Vec::with_capacity(placement.n_ues());
        let mut mean_snr = Vec::with_capacity(placement.n_ues() * n_sites);
        for (i, p, serving) in placement.iter() {
            ue_mo.push(i);
            ue_site.push(serving);
            let share = match params.rate_model {
                RateModel::Coverage => power,
                RateModel::Associated => power / served[serving] as f64,
            };
            for site in &layout.sites {
                let d = p.distance(site).max(MIN_LINK_DISTANCE_KM);
                let loss = path_loss_db(d, 0.0)?;
                mean_snr.push(share * (-loss * LN10_OVER_10).exp() / noise);
            }
        }

        Ok(Self {
            model: params.rate_model,
            n_mos,
            n_sites,
            bandwidth_hz: params.bandwidth_per_ue_hz,
            ue_mo,
            ue_site,
            mean_snr,
        })
    }

    pub fn n_ues(&self) -> usize {
        self.ue_mo.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_mos(&self) -> usize {
        self.n_mos
    }

    /// Builds R for one shadowing realization, in Gbps.
    pub fn rate_matrix(&self, shadowing: &ShadowingField) -> Result<RateMatrix> {
        let mut r = RateMatrix::zeros(self.n_mos, self.n_sites);
        self.fill_rate_matrix(shadowing, &mut r)?;
        Ok(r)
    }

    /// Like [`LinkBudget::rate_matrix`] but reuses `out`.
    pub fn fill_rate_matrix(&self, shadowing: &ShadowingField, out: &mut RateMatrix) -> Result<()> {
        if shadowing.n_ues() != self.n_ues() || shadowing.n_sites() != self.n_sites {
            return Err(Error::Dimension(format!(
                "shadowing is {}x{}, link budget is {}x{}",
                shadowing.n_ues(),
                shadowing.n_sites(),
                self.n_ues(),
                self.n_sites
            )));
        }
        if out.n_mos() != self.n_mos || out.n_sites() != self.n_sites {
            return Err(Error::Dimension("output rate matrix has the wrong shape".into()));
        }
        let ns = self.n_sites;
        let b = self.bandwidth_hz;
        let data = out.data_mut();
        data.iter_mut().for_each(|v| *v = 0.0);
        for (u, (&mo, &serving)) in self.ue_mo.iter().zip(&self.ue_site).enumerate() {
            let snr0 = &self.mean_snr[u * ns..(u + 1) * ns];
            let psi = &shadowing.values_db[u * ns..(u + 1) * ns];
            let row = &mut data[mo * ns..(mo + 1) * ns];
            match self.model {
                RateModel::Coverage => {
                    for k in 0..ns {
                        row[k] += capacity(b, snr0[k] * (-psi[k] * LN10_OVER_10).exp()) * 1e-9;
                    }
                }
                RateModel::Associated => {
                    let k = serving;
                    row[k] += capacity(b, snr0[k] * (-psi[k] * LN10_OVER_10).exp()) * 1e-9;
                }
            }
        }
        Ok(())
    }
}

/// R(i,k) in Gbps for one slot; see [`RateModel`] for the aggregation rule.
pub fn build_rate_matrix(
    layout: &DistrictLayout,
    placement: &UePlacement,
    shadowing: &ShadowingField,
    params: &ChannelParams,
) -> Result<RateMatrix> {
    LinkBudget::new(layout, placement, params)?.rate_matrix(shadowing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_layout, Point};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss_db(1.0, 0.0).unwrap(), 128.0);
        assert!((path_loss_db(10.0, 0.0).unwrap() - 165.6).abs() < 1e-9);
        let expected = 128.0 + 37.6 * 35f64.log10();
        assert!((path_loss_db(35.0, 0.0).unwrap() - expected).abs() < 1e-12);
        assert!((path_loss_db(35.0, 0.0).unwrap() - 186.06).abs() < 0.01);
        assert!(path_loss_db(0.0, 0.0).is_err());
        assert!(path_loss_db(-1.0, 0.0).is_err());
        assert_eq!(path_loss_db(1.0, 3.5).unwrap(), 131.5);
    }

    #[test]
    fn shadowing_with_zero_sigma_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| draw_shadowing(&mut rng, 0.0) == 0.0));
    }

    #[test]
    fn shadowing_is_reproducible() {
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            (0..10).map(|_| draw_shadowing(&mut rng, 8.0)).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b: Vec<f64> = (0..10).map(|_| draw_shadowing(&mut rng, 8.0)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn shannon_examples() {
        // 0 dB SNR over 5 MHz carries exactly 5 Mbit/s.
        let c = shannon_rate(5e6, 1.0, 1.0, 1.0 / 5e6).unwrap();
        assert!((c - 5e6).abs() < 1e-6);
        assert_eq!(shannon_rate(5e6, 1.0, 0.0, 1e-20).unwrap(), 0.0);

        // 46 dBm over 128 dB loss against -179 dBm/Hz over 5 MHz: about 30 dB SNR
        // (the noise floor is -112.01 dBm, so the exact figure is 30.01 dB).
        let gain = 10f64.powf(-12.8);
        let c = shannon_rate(5e6, dbm_to_w(46.0), gain, dbm_to_w(-179.0)).unwrap();
        let expected = 5e6 * 1001f64.log2();
        assert!(((c - expected) / expected).abs() < 1e-3, "{c}");
        assert!(((c - 49.84e6) / 49.84e6).abs() < 1e-3, "{c}");

        assert!(shannon_rate(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(shannon_rate(1.0, 1.0, 1.0, 0.0).is_err());
    }

    fn single_ue(model: RateModel, ues: usize) -> (DistrictLayout, UePlacement, ChannelParams) {
        let layout = generate_layout(1, 35.0, 11.0);
        let placement = UePlacement {
            positions: vec![vec![Point::new(1.0, 0.0); ues]],
            association: vec![vec![0; ues]],
        };
        let params = ChannelParams {
            rate_model: model,
            ..ChannelParams::default()
        };
        (layout, placement, params)
    }

    #[test]
    fn single_ue_at_one_km_gets_the_30db_rate() {
        for model in [RateModel::Coverage, RateModel::Associated] {
            let (l, p, c) = single_ue(model, 1);
            let r = build_rate_matrix(&l, &p, &ShadowingField::zeros(1, 1), &c).unwrap();
            let expected = shannon_rate(5e6, dbm_to_w(46.0), 10f64.powf(-12.8), dbm_to_w(-179.0)).unwrap() * 1e-9;
            assert!(((r.get(0, 0) - expected) / expected).abs() < 1e-12);
            assert!(((r.get(0, 0) - 0.04984) / 0.04984).abs() < 1e-3);
        }
    }

    #[test]
    fn power_split_is_concave_in_ue_count() {
        let rate = |n| {
            let (l, p, c) = single_ue(RateModel::Associated, n);
            build_rate_matrix(&l, &p, &ShadowingField::zeros(n, 1), &c)
                .unwrap()
                .get(0, 0)
        };
        assert!(rate(4) < 2.0 * rate(2));
        assert!(rate(2) < 2.0 * rate(1));
        assert!(rate(2) > rate(1));
    }

    #[test]
    fn operator_without_ues_gets_zero() {
        let layout = generate_layout(3, 35.0, 11.0);
        let placement = UePlacement {
            positions: vec![vec![], vec![Point::new(0.5, 0.5)]],
            association: vec![vec![], vec![0]],
        };
        for model in [RateModel::Coverage, RateModel::Associated] {
            let params = ChannelParams {
                rate_model: model,
                ..ChannelParams::default()
            };
            let r = build_rate_matrix(&layout, &placement, &ShadowingField::zeros(1, 3), &params).unwrap();
            assert!(r.row(0).iter().all(|&v| v == 0.0));
            assert!(r.get(1, 0) > 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (l, p, c) = single_ue(RateModel::Coverage, 2);
        assert!(build_rate_matrix(&l, &p, &ShadowingField::zeros(3, 1), &c).is_err());
    }
}
