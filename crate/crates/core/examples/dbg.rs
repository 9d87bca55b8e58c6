fn main() {
    let cfg = mapfuse::config::SurveyConfig::default();
    let scene = {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let survey = mapfuse::simulator::generate_survey(&cfg, &mut rng).unwrap();
        let (fragments, ground_truth) = mapfuse::simulator::fragment_documentation_track(&survey, &cfg, &mut rng);
        let mut scene = mapfuse::scene::Scene {
            version: 1,
            cameras: vec![survey.intrinsics],
            trajectory: survey.trajectory,
            extrinsic_estimate: survey.extrinsic,
            extrinsic_prior: survey.extrinsic,
            fragments,
            markers: Default::default(),
            ground_truth: Some(ground_truth),
        };
        mapfuse::simulator::corrupt_priors(&mut scene, &cfg, &mut rng);
        scene
    };
    println!("check: {:?}", scene.check_structure());
    println!("fragments: {}", scene.fragments.len());
    println!("keyframes: {}", scene.keyframe_count());
    println!("landmarks: {}", scene.landmark_count());
    println!("observations: {}", scene.observation_count());
}
