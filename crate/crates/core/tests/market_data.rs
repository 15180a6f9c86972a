use proptest::prelude::*;
use storage_risk::market_data::{
    read_prices, split_horizon, split_prices, synthetic_prices, write_prices, Currency, DataError, Market,
    PriceMap, PriceSeries, SyntheticProfile, TimeGrid,
};

fn grid(hours: usize) -> TimeGrid {
    TimeGrid::span(0, hours, 0).unwrap()
}

#[test]
fn market_names_round_trip() {
    for m in Market::ALL {
        assert_eq!(m.as_str().parse::<Market>().unwrap(), m);
    }
    assert!("XX".parse::<Market>().is_err());
}

#[test]
fn missing_hour_is_reported() {
    let csv = "hour,market,price\n0,DA,1\n0,ID,2\n1,DA,3\n";
    let e = read_prices(csv.as_bytes(), &grid(2), Currency::USD).unwrap_err();
    assert!(matches!(e, DataError::MissingHour { hour: 1, market: Market::ID }));
}

#[test]
fn row_errors_carry_row_numbers() {
    let cases = [
        ("hour,market,price\n0,DA,1\n0,DA,2\n", 3),
        ("hour,market,price\n0,XY,1\n", 2),
        ("hour,market,price\n0,DA,nan\n", 2),
        ("hour,market,price\n7,DA,1\n", 2),
        ("hour,market,price\n-1,DA,1\n", 2),
    ];
    for (csv, want) in cases {
        let e = read_prices(csv.as_bytes(), &grid(1), Currency::USD).unwrap_err();
        let row = match e {
            DataError::DuplicateEntry { row, .. }
            | DataError::UnknownMarket { row, .. }
            | DataError::NonFiniteValue { row, .. }
            | DataError::OutsideGrid { row, .. }
            | DataError::BadRow { row, .. } => row,
            other => panic!("{csv}: {other}"),
        };
        assert_eq!(row, want, "{csv}");
    }
}

#[test]
fn wrong_header_is_rejected() {
    let e = read_prices("h,m,p\n".as_bytes(), &grid(1), Currency::USD).unwrap_err();
    assert!(matches!(e, DataError::BadRow { row: 1, .. }));
}

#[test]
fn horizon_split_at_observation_hour() {
    let g = TimeGrid::new(10, 13, 15).unwrap();
    let s = PriceSeries::new(Market::DA, 10, (0..6).map(f64::from).collect(), Currency::EUR);
    let (a, b) = split_horizon(&s, &g).unwrap();
    assert_eq!((a.start, a.values.clone()), (10, vec![0.0, 1.0, 2.0]));
    assert_eq!((b.start, b.values.clone()), (13, vec![3.0, 4.0, 5.0]));
    assert_eq!(b.currency, Currency::EUR);
    assert_eq!(s.at(15), Some(5.0));
    assert_eq!(s.at(16), None);
    assert!(s.window(14, 3).is_none());
}

#[test]
fn synthetic_prices_are_seeded() {
    let g = grid(48);
    let p = SyntheticProfile::default();
    assert_eq!(synthetic_prices(&g, &p, 4), synthetic_prices(&g, &p, 4));
    assert_ne!(synthetic_prices(&g, &p, 4), synthetic_prices(&g, &p, 5));
    let m = synthetic_prices(&g, &p, 4);
    assert!(m.values().all(|s| s.len() == 48 && s.values.iter().all(|x| x.is_finite())));
}

fn price_map() -> impl Strategy<Value = PriceMap> {
    (0usize..50, 1usize..30).prop_flat_map(|(start, n)| {
        (prop::collection::vec(-500.0f64..3000.0, n), prop::collection::vec(-500.0f64..3000.0, n)).prop_map(
            move |(da, id)| {
                let mut m = PriceMap::new();
                m.insert(Market::DA, PriceSeries::new(Market::DA, start, da, Currency::USD));
                m.insert(Market::ID, PriceSeries::new(Market::ID, start, id, Currency::USD));
                m
            },
        )
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(m in price_map()) {
        let s = &m[&Market::DA];
        let g = TimeGrid::span(s.start, s.len(), 0).unwrap();
        let mut buf = Vec::new();
        write_prices(&m, &mut buf).unwrap();
        let back = read_prices(buf.as_slice(), &g, Currency::USD).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn split_partitions_every_hour(m in price_map(), cut in 0usize..40) {
        let s = &m[&Market::DA];
        let t_obs = s.start + cut.min(s.len());
        let g = TimeGrid::new(s.start, t_obs, s.start + s.len() - 1).unwrap();
        let (first, obs) = split_prices(&m, &g).unwrap();
        for mk in Market::ALL {
            let joined: Vec<f64> = first[&mk].values.iter().chain(&obs[&mk].values).copied().collect();
            prop_assert_eq!(&joined, &m[&mk].values);
            prop_assert_eq!(first[&mk].len(), g.num_first_stage());
        }
    }
}
