from django.apps import AppConfig


class HamiltonianLearningConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'hamiltonian_learning'
    verbose_name = 'Hamiltonian learning for SU(4) spin chains'
