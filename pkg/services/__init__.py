# Services package