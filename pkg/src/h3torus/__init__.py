"""Third unramified cohomology of norm-one tori of abelian extensions."""
