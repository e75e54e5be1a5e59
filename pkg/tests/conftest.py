import hypothesis

hypothesis.settings.register_profile(
    "lab", derandomize=True, deadline=None, max_examples=50)
hypothesis.settings.load_profile("lab")
