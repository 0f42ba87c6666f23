"""Local deployment harness: transports, authority mock, attacks and CLI."""
