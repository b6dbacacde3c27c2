from hypothesis import settings

settings.register_profile("slow-box", deadline=None)
settings.load_profile("slow-box")
