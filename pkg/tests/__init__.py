# branchlab tests
