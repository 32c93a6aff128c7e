# Modules are imported by name (qaoa_precond.qaoa_sim, qaoa_precond.bench, ...).
# The BMI class is not re-exported here; import it from qaoa_precond.bmi_optimizer.
__version__ = "1.0.0"
