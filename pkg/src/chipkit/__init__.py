"""chipkit: register-map code generation and transaction-level SoC validation.

The pipeline: scan RTL for register candidates (sv_scan), merge them into the
CSV database (regdb), render RTL/docs/software views/tests (emit), and check
the result against a modeled SoC (busmodel) driven through a line protocol
(uart_host). The cli module ties it together.
"""

__version__ = "0.1.0"
